fn main() -> std::process::ExitCode {
    popmarket::cli::main()
}
