fn main() {
    std::process::exit(ecx_harness::cli::main_with_args(std::env::args_os()));
}
