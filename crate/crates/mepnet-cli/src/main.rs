fn main() {
    println!("mepnet");
}
