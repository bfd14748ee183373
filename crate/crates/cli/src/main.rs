fn main() {
    std::process::exit(cyclematch_cli::run(std::env::args_os()));
}
