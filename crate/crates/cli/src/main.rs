fn main() {
    std::process::exit(rmt_spacing_cli::main_with_args(std::env::args_os().collect()));
}
