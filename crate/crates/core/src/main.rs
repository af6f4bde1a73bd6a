fn main() {
    std::process::exit(expansion_lab::cli::main_entry(std::env::args_os()));
}
