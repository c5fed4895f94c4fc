fn main() {
    std::process::exit(triage_cli::run(std::env::args_os()));
}
