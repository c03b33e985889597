#include <iostream>
int main() { std::cout << "slatkit\n"; return 0; }
