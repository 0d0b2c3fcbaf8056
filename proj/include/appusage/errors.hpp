#pragma once

#include <stdexcept>
#include <string>

namespace appusage {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedRow : DataError {
    std::size_t line;
    explicit MalformedRow(std::size_t line_, const std::string& detail)
        : DataError("malformed row at line " + std::to_string(line_) + ": " + detail), line(line_) {}
};

struct UnknownKind : DataError {
    std::size_t line;
    UnknownKind(std::size_t line_, const std::string& value)
        : DataError("unknown event kind \"" + value + "\" at line " + std::to_string(line_)), line(line_) {}
};

struct EmptyFile : DataError {
    explicit EmptyFile(const std::string& path) : DataError("empty input file: " + path) {}
};

struct DuplicatePackage : DataError {
    explicit DuplicatePackage(const std::string& pkg)
        : DataError("package \"" + pkg + "\" mapped to conflicting categories") {}
};

struct DuplicateStudent : DataError {
    explicit DuplicateStudent(const std::string& id)
        : DataError("duplicate student id \"" + id + "\"") {}
};

struct CgpaOutOfRange : DataError {
    CgpaOutOfRange(const std::string& id, double value)
        : DataError("cgpa " + std::to_string(value) + " out of [0,4] for student \"" + id + "\"") {}
};

struct ConstantInput : DataError {
    ConstantInput() : DataError("constant input vector") {}
};

struct LengthMismatch : DataError {
    LengthMismatch() : DataError("input vectors differ in length") {}
};

struct TooFewSamples : DataError {
    explicit TooFewSamples(const std::string& what_) : DataError("too few samples: " + what_) {}
};

struct POutOfRange : DataError {
    explicit POutOfRange(double p) : DataError("p-value " + std::to_string(p) + " outside [0,1]") {}
};

struct TooFewPoints : DataError {
    explicit TooFewPoints(const std::string& what_) : DataError("too few points: " + what_) {}
};

struct AllNoise : DataError {
    AllNoise() : DataError("clustering produced no non-noise cluster") {}
};

struct NoAnalyzableStudents : DataError {
    NoAnalyzableStudents() : DataError("cohort contains no analyzable students") {}
};

struct KTooLarge : DataError {
    KTooLarge(std::size_t k, std::size_t n)
        : DataError("k=" + std::to_string(k) + " exceeds training size " + std::to_string(n)) {}
};

struct TooFewFamilies : DataError {
    explicit TooFewFamilies(std::size_t n)
        : DataError("voting ensemble needs >= 3 estimator families, got " + std::to_string(n)) {}
};

struct InfeasibleTotal : DataError {
    explicit InfeasibleTotal(const std::string& what_) : DataError("infeasible planted total: " + what_) {}
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace appusage
