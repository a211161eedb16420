#ifndef BERGORB_TESTS_TEST_PRECISION_HPP
#define BERGORB_TESTS_TEST_PRECISION_HPP

#include "bergorb/precision.hpp"

#include <gtest/gtest.h>

namespace bergorb::testing {

// Fixes the 128-bit working precision before any test body runs.
class PrecisionEnvironment : public ::testing::Environment {
 public:
  void SetUp() override { set_working_precision(kDefaultPrecisionBits); }
};

inline ::testing::Environment *const kPrecisionEnvironment =
    ::testing::AddGlobalTestEnvironment(new PrecisionEnvironment);

} // namespace bergorb::testing

#endif // BERGORB_TESTS_TEST_PRECISION_HPP
