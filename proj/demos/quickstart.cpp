#include "relens/relens.hpp"
int main() { return 0; }
