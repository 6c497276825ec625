fn main() {
    std::process::exit(affsphere_cli::run(std::env::args_os()));
}
