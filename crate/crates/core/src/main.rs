fn main() -> std::process::ExitCode {
    critmetro::cli::run(std::env::args_os())
}
