fn main() {
    std::process::exit(ccp_irl::cli::run(std::env::args_os()));
}
