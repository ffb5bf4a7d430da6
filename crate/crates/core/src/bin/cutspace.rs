fn main() {
    std::process::exit(cutspace::cli::dispatch(std::env::args_os()));
}
