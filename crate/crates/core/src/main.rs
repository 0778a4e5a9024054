fn main() {
    std::process::exit(treeimpute::cli::run(std::env::args_os()));
}
