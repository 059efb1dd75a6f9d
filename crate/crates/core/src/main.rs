fn main() {
    std::process::exit(sparsemix::cli::run(std::env::args_os()));
}
