fn main() -> std::process::ExitCode {
    routerplace::cli::main_entry()
}
