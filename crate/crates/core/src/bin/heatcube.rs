fn main() {
    std::process::exit(heatcube::cli::main_entry());
}
