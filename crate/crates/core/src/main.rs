fn main() {
    let code = permseries::cli::run_command(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
