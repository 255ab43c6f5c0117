fn main() {
    std::process::exit(sobolev_abp::cli::main_with_args(std::env::args_os()));
}
