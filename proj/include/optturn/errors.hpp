/*
 * Copyright 2026 The optturn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace optturn {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define OPTTURN_DEFINE_ERROR(Name)            \
    class Name : public Error {               \
    public:                                   \
        explicit Name(const std::string& msg) \
            : Error(#Name ": " + msg) {}      \
    }

OPTTURN_DEFINE_ERROR(NotSymmetric);
OPTTURN_DEFINE_ERROR(NotPositiveDefinite);
OPTTURN_DEFINE_ERROR(DimensionMismatch);
OPTTURN_DEFINE_ERROR(SingularSystem);
OPTTURN_DEFINE_ERROR(InvalidParameter);
OPTTURN_DEFINE_ERROR(DegenerateForecast);
OPTTURN_DEFINE_ERROR(InvalidConfig);
OPTTURN_DEFINE_ERROR(InsufficientData);
OPTTURN_DEFINE_ERROR(ConfigError);
OPTTURN_DEFINE_ERROR(IOFailure);

#undef OPTTURN_DEFINE_ERROR

}  // namespace optturn
