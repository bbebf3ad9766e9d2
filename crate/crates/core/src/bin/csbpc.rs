fn main() {
    std::process::exit(csbpc::cli::run(std::env::args_os()));
}
