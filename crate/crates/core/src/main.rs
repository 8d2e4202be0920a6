fn main() {
    std::process::exit(deskmerge::cli::run(std::env::args_os()));
}
