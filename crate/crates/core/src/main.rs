fn main() {
    std::process::exit(drive_observability::cli::run(std::env::args_os()));
}
