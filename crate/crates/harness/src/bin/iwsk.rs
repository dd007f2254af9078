fn main() {
    std::process::exit(iwatsuka_harness::run(std::env::args_os()));
}
