fn main() {
    std::process::exit(qgenus::run(std::env::args_os()));
}
