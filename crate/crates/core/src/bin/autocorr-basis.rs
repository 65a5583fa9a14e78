fn main() {
    std::process::exit(autocorr_basis::cli::main())
}
