#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "topomap/error.hpp"

int main(int argc, char** argv) {
    topomap::set_warnings_enabled(false);
    doctest::Context context(argc, argv);
    return context.run();
}
