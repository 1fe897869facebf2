#include <pybind11/pybind11.h>
PYBIND11_MODULE(_revpulse, m) { m.doc() = "placeholder"; }
