#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dflab {

// Requested sieve would exceed the configured memory budget.
class SieveCapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

// A family spec that cannot assign some prime power to exactly one class,
// or an oracle table whose decomposition is missing or ambiguous.
class MalformedFamilyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Sequence handed to the primitive-pair constructor contains a divisible pair.
class NotPrimitiveError : public std::invalid_argument {
public:
    NotPrimitiveError(std::uint64_t divisor, std::uint64_t multiple)
        : std::invalid_argument("sequence is not primitive: " + std::to_string(divisor) +
                                " divides " + std::to_string(multiple)),
          divisor_(divisor),
          multiple_(multiple) {}

    std::uint64_t divisor() const { return divisor_; }
    std::uint64_t multiple() const { return multiple_; }

private:
    std::uint64_t divisor_;
    std::uint64_t multiple_;
};

// Family JSON that does not match the documented schema; message names the field.
class FamilyParseError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace dflab
