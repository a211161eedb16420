#ifndef BERGORB_ERRORS_HPP
#define BERGORB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bergorb {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BERGORB_DEFINE_ERROR(Name)                                                                  \
  class Name : public Error {                                                                       \
   public:                                                                                          \
    explicit Name(const std::string &what) : Error(std::string(#Name ": ") + what) {}               \
  }

BERGORB_DEFINE_ERROR(Infeasible);
BERGORB_DEFINE_ERROR(MismatchedOrder);
BERGORB_DEFINE_ERROR(NoNontrivialCharacter);
BERGORB_DEFINE_ERROR(InvalidWeightSystem);
BERGORB_DEFINE_ERROR(FiberActionNotFaithful);
BERGORB_DEFINE_ERROR(MetricNotPositive);
BERGORB_DEFINE_ERROR(NonIntegralDegree);
BERGORB_DEFINE_ERROR(InvalidModel);
BERGORB_DEFINE_ERROR(QuadratureNotConverged);
BERGORB_DEFINE_ERROR(IllConditioned);
BERGORB_DEFINE_ERROR(DegenerateData);
BERGORB_DEFINE_ERROR(ConfigInvalid);

#undef BERGORB_DEFINE_ERROR

} // namespace bergorb

#endif // BERGORB_ERRORS_HPP
