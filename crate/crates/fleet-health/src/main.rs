fn main() {
    fleet_health::cli::main()
}
