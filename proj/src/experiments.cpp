#include "cfiwb/experiments.hpp"
