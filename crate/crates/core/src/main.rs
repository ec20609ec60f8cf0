use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (out, code) = jetfield::cli::run(&args);
    if code == jetfield::cli::EXIT_USAGE {
        eprint!("{out}");
    } else {
        print!("{out}");
        let _ = std::io::stdout().flush();
    }
    std::process::exit(code);
}
