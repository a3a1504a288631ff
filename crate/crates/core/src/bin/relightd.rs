fn main() {
    std::process::exit(relight::relightd::cli::run(std::env::args_os()));
}
