fn main() {
    std::process::exit(bayesc::run(std::env::args_os()));
}
