fn main() {
    if let Err(e) = axitrap::cli::run(std::env::args_os()) {
        eprintln!("axitrap: {e}");
        std::process::exit(e.exit_code());
    }
}
