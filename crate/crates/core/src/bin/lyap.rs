fn main() {
    lyapunov_core::cli::init_logging();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code =
        lyapunov_core::cli::run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
