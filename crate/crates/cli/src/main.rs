fn main() {
    std::process::exit(convexdef_cli::run(std::env::args_os()));
}
