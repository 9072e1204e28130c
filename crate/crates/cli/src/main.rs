fn main() {
    std::process::exit(pforecast_cli::run(std::env::args_os()));
}
