fn main() -> std::process::ExitCode {
    smallworld_seir::cli::main()
}
