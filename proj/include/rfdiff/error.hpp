// rfdiff - RF heatmap generation toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <stdexcept>
#include <string>

namespace rfdiff {

// Error classes map onto CLI exit codes: config=2, data=3, numeric=4,
// verification=5.

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string &msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string &msg) : std::runtime_error(msg) {}
};

class VerificationError : public std::runtime_error {
public:
    explicit VerificationError(const std::string &msg) : std::runtime_error(msg) {}
};

// Contract violations inside library code (shape mismatches, bad arguments).
class ContractError : public std::invalid_argument {
public:
    explicit ContractError(const std::string &msg) : std::invalid_argument(msg) {}
};

} // namespace rfdiff
