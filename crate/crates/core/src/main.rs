fn main() {
    std::process::exit(crowdsched::cli::run(std::env::args_os()));
}
