// Catch2 amalgamated implementation; supplies main().
#include <catch2/catch_amalgamated.cpp>
