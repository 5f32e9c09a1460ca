fn main() {
    std::process::exit(monolab::cli::dispatch(std::env::args_os()));
}
