fn main() {
    std::process::exit(rhgcn::cli::run(std::env::args_os()));
}
