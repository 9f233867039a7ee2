fn main() {
    cpctl::cli::main()
}
