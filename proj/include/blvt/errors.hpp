#pragma once

#include <stdexcept>
#include <string>

namespace blvt {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BLVT_ERROR_TYPE(Name)          \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

// data
BLVT_ERROR_TYPE(ParseError);
BLVT_ERROR_TYPE(OrderError);
BLVT_ERROR_TYPE(RangeError);
BLVT_ERROR_TYPE(GapError);
BLVT_ERROR_TYPE(LengthError);
BLVT_ERROR_TYPE(InsufficientHistoryError);
BLVT_ERROR_TYPE(NetworkError);
BLVT_ERROR_TYPE(RateLimitError);
BLVT_ERROR_TYPE(EmptyRangeError);

// portfolio
BLVT_ERROR_TYPE(DegenerateError);
BLVT_ERROR_TYPE(NonConvergenceError);

// metrics
BLVT_ERROR_TYPE(ZeroVolatilityError);

// neutral
BLVT_ERROR_TYPE(DegenerateRegressorError);
BLVT_ERROR_TYPE(NeutralInfeasibleError);

// losses / nn
BLVT_ERROR_TYPE(DivisionGuardError);
BLVT_ERROR_TYPE(ShapeError);

// training
BLVT_ERROR_TYPE(DivergenceError);
BLVT_ERROR_TYPE(SeedError);

// backtest
BLVT_ERROR_TYPE(DegenerateCovarianceError);
BLVT_ERROR_TYPE(MissingCellError);

// cli
BLVT_ERROR_TYPE(ConfigError);

#undef BLVT_ERROR_TYPE

}  // namespace blvt
