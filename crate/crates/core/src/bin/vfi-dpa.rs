fn main() {
    let code = vfi_dpa::cli::run(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
