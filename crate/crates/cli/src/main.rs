fn main() {
    std::process::exit(biaslens_cli::run(std::env::args_os()));
}
