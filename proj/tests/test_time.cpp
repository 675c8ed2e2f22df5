#include <catch2/catch_amalgamated.hpp>

#include "traceauth/time.hpp"

using namespace traceauth;

TEST_CASE("epoch is zero") {
    CHECK(civil_seconds(1970, 1, 1, 0, 0, 0) == 0);
    CHECK(civil_seconds(1970, 1, 2, 0, 0, 0) == kSecondsPerDay);
}

TEST_CASE("civil round trip") {
    const CivilSeconds t = civil_seconds(2009, 4, 22, 10, 46, 0);
    const CivilParts p = civil_parts(t);
    CHECK(p.year == 2009);
    CHECK(p.month == 4);
    CHECK(p.day == 22);
    CHECK(p.hour == 10);
    CHECK(p.minute == 46);
    CHECK(p.second == 0);
    CHECK(format_iso8601(t) == "2009-04-22T10:46:00");
    CHECK(parse_iso8601("2009-04-22T10:46:00") == t);
    CHECK(parse_iso8601("2009-04-22 10:46:00") == t);
}

TEST_CASE("round trip over a date range") {
    for (CivilSeconds t = civil_seconds(1999, 12, 28); t < civil_seconds(2000, 3, 3);
         t += 7919) { // prime step hits varied times of day
        CHECK(parse_iso8601(format_iso8601(t)) == t);
    }
}

TEST_CASE("weekday against known dates") {
    CHECK(weekday_of(civil_seconds(1970, 1, 1)) == 4);  // Thursday
    CHECK(weekday_of(civil_seconds(2024, 1, 1)) == 1);  // Monday
    CHECK(weekday_of(civil_seconds(2009, 4, 22)) == 3); // Wednesday
    CHECK(weekday_of(civil_seconds(2024, 1, 6)) == 6);  // Saturday
    CHECK(weekday_of(civil_seconds(2024, 1, 7)) == 0);  // Sunday
    // Any second within the day maps to the same weekday.
    CHECK(weekday_of(civil_seconds(2024, 1, 7, 23, 59, 59)) == 0);
}

TEST_CASE("second_of_day and day_index for pre-epoch times") {
    const CivilSeconds t = civil_seconds(1969, 12, 31, 23, 0, 0);
    CHECK(t == -3600);
    CHECK(day_index(t) == -1);
    CHECK(second_of_day(t) == 23 * 3600);
    CHECK(weekday_of(t) == 3); // 1969-12-31 was a Wednesday
}

TEST_CASE("malformed timestamps rejected") {
    CHECK_THROWS_WITH(parse_iso8601("not a time"),
                      Catch::Matchers::ContainsSubstring("malformed timestamp"));
    CHECK_THROWS_WITH(parse_iso8601("2024-01-01X10:00:00"),
                      Catch::Matchers::ContainsSubstring("malformed timestamp"));
    CHECK_THROWS_WITH(parse_iso8601("2024-01-01T25:00:00"),
                      Catch::Matchers::ContainsSubstring("malformed timestamp"));
    CHECK_THROWS_WITH(parse_iso8601("2024-01-01T10:61:00"),
                      Catch::Matchers::ContainsSubstring("malformed timestamp"));
}

TEST_CASE("invalid calendar dates rejected") {
    CHECK_THROWS_WITH(civil_seconds(2023, 2, 29), "invalid calendar date");
    CHECK_THROWS_WITH(civil_seconds(2024, 13, 1), "invalid calendar date");
    CHECK_THROWS_WITH(civil_seconds(2024, 4, 31), "invalid calendar date");
    CHECK_NOTHROW(civil_seconds(2024, 2, 29)); // leap year
}

TEST_CASE("floor division") {
    CHECK(floor_div(7, 2) == 3);
    CHECK(floor_div(-7, 2) == -4);
    CHECK(floor_div(-4, 2) == -2);
    CHECK(floor_div(0, 5) == 0);
}
