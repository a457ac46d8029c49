fn main() {
    std::process::exit(flagkop::cli::run(std::env::args_os()));
}
