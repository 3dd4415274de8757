fn main() -> std::process::ExitCode {
    fairrank::cli::main()
}
