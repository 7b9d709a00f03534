fn main() {
    std::process::exit(cpvs::cli::main_entry());
}
