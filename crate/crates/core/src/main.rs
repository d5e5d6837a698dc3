fn main() -> std::process::ExitCode {
    camrobust::cli::run(std::env::args_os())
}
