use std::io;
use std::panic::{self, AssertUnwindSafe};

fn main() {
    let code = panic::catch_unwind(AssertUnwindSafe(|| {
        cavity_bell_cli::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock())
    }))
    .unwrap_or(2);
    std::process::exit(code);
}
