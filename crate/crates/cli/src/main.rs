fn main() {
    std::process::exit(solstab_cli::run(std::env::args_os()));
}
