#include "rawmix/error.hpp"

namespace rawmix {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::coordinate: return "coordinate";
    case ErrorKind::structure: return "structure";
    case ErrorKind::range: return "range";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::config: return "config";
    case ErrorKind::size: return "size";
    case ErrorKind::data: return "data";
    case ErrorKind::contract: return "contract";
    case ErrorKind::io: return "io";
    case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

void fail(ErrorKind kind, const std::string& message)
{
    throw Error(kind, message);
}

} // namespace rawmix
