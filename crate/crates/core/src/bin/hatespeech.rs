fn main() -> std::process::ExitCode {
    hatespeech::cli::main()
}
