fn main() -> std::process::ExitCode {
    advreg::cli::main()
}
