#include "panelwatch/time.hpp"

#include <charconv>

#include <fmt/format.h>

#include "panelwatch/error.hpp"

namespace panelwatch {
namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
    if (pos + len > text.size()) {
        throw Error(ErrorCode::Format, fmt::format("truncated time value '{}'", whole));
    }
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len) {
        throw Error(ErrorCode::Format, fmt::format("bad time value '{}'", whole));
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, std::string_view allowed, std::string_view whole) {
    if (pos >= text.size() || allowed.find(text[pos]) == std::string_view::npos) {
        throw Error(ErrorCode::Format, fmt::format("bad time value '{}'", whole));
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

Date parse_date(std::string_view text) {
    text = trim(text);
    const int y = read_int(text, 0, 4, text);
    expect_char(text, 4, "-", text);
    const int m = read_int(text, 5, 2, text);
    expect_char(text, 7, "-", text);
    const int d = read_int(text, 8, 2, text);
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) throw Error(ErrorCode::Format, fmt::format("invalid date '{}'", text));
    return date;
}

Timestamp parse_timestamp(std::string_view text) {
    text = trim(text);
    const Date date = parse_date(text.substr(0, std::min<std::size_t>(10, text.size())));
    expect_char(text, 10, "T ", text);
    const int hh = read_int(text, 11, 2, text);
    expect_char(text, 13, ":", text);
    const int mm = read_int(text, 14, 2, text);
    int ss = 0;
    std::size_t pos = 16;
    if (pos < text.size() && text[pos] == ':') {
        ss = read_int(text, 17, 2, text);
        pos = 19;
    }
    std::string_view zone = text.substr(pos);
    if (!(zone.empty() || zone == "Z" || zone == "+00:00" || zone == "+0000")) {
        throw Error(ErrorCode::Format, fmt::format("only UTC timestamps are accepted: '{}'", text));
    }
    if (hh > 23 || mm > 59 || ss > 60) {
        throw Error(ErrorCode::Format, fmt::format("invalid time of day '{}'", text));
    }
    using namespace std::chrono;
    return sys_seconds{sys_days{date}} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const Date d{day};
    const auto tod = t - day;
    const auto h = duration_cast<hours>(tod);
    const auto m = duration_cast<minutes>(tod - h);
    const auto s = tod - h - m;
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", int(d.year()), unsigned(d.month()),
                       unsigned(d.day()), h.count(), m.count(), s.count());
}

std::string format_date(Date d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", int(d.year()), unsigned(d.month()), unsigned(d.day()));
}

Date local_date(Timestamp t, std::chrono::minutes utc_offset) {
    return Date{std::chrono::floor<std::chrono::days>(t + utc_offset)};
}

std::size_t slot_of_day(Timestamp t, std::chrono::minutes utc_offset) {
    using namespace std::chrono;
    const auto local = t + utc_offset;
    const auto tod = local - floor<days>(local);
    return static_cast<std::size_t>(duration_cast<minutes>(tod).count() / kSampleInterval.count());
}

Timestamp day_start(Date date, std::chrono::minutes utc_offset) {
    return Timestamp{std::chrono::sys_days{date}} - utc_offset;
}

}  // namespace panelwatch
