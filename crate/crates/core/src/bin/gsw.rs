fn main() {
    std::process::exit(gswalk::cli::run(std::env::args_os()));
}
