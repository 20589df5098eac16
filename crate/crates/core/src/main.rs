fn main() {
    std::process::exit(modchaos::cli::run(std::env::args_os()));
}
