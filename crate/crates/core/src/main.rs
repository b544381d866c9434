fn main() -> std::process::ExitCode {
    physfoley::cli::main()
}
