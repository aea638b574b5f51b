#pragma once

#include "fixtures.hpp"

#include <doctest.h>
