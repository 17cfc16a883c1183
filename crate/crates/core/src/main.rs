fn main() {
    std::process::exit(twolayer::cli::run(std::env::args_os()));
}
