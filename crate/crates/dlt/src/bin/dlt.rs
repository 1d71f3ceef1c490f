// SPDX-License-Identifier: Apache-2.0

fn main() {
    let code = dlt::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
