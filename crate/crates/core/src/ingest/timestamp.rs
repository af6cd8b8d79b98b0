use chrono::NaiveDateTime;

/// Day-first layout used by the CIC flow-meter exports, e.g. `14/02/2018 08:31:01`.
pub const DAY_FIRST: &str = "%d/%m/%Y %H:%M:%S";

/// Parses `raw` with the strftime-style `format` and returns seconds since the Unix epoch,
/// reading the wall-clock value as UTC. `None` means the row is malformed.
pub fn convert_timestamp(raw: &str, format: &str) -> Option<f64> {
    let parsed = NaiveDateTime::parse_from_str(raw.trim(), format).ok()?;
    Some(parsed.and_utc().timestamp() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Days-from-civil conversion, written out by hand so it shares nothing with chrono.
    fn civil_to_epoch(y: i64, m: i64, d: i64, hh: i64, mm: i64, ss: i64) -> i64 {
        let leap = |y: i64| (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        let month_days = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
        let mut days = 0;
        for year in 1970..y {
            days += if leap(year) { 366 } else { 365 };
        }
        for month in 1..m {
            days += month_days[(month - 1) as usize];
            if month == 2 && leap(y) {
                days += 1;
            }
        }
        days += d - 1;
        days * 86_400 + hh * 3600 + mm * 60 + ss
    }

    #[test]
    fn epoch_origin_and_one_minute() {
        assert_eq!(convert_timestamp("01/01/1970 00:00:00", DAY_FIRST), Some(0.0));
        assert_eq!(convert_timestamp("01/01/1970 00:01:00", DAY_FIRST), Some(60.0));
    }

    #[test]
    fn cic_timestamp_matches_calendar_oracle() {
        let oracle = civil_to_epoch(2018, 2, 14, 8, 31, 1);
        assert_eq!(oracle, 1_518_597_061);
        assert_eq!(convert_timestamp("14/02/2018 08:31:01", DAY_FIRST), Some(oracle as f64));
        let leap_day = civil_to_epoch(2016, 2, 29, 23, 59, 59);
        assert_eq!(convert_timestamp("29/02/2016 23:59:59", DAY_FIRST), Some(leap_day as f64));
    }

    #[test]
    fn unparseable_values_are_rejected() {
        assert_eq!(convert_timestamp("2018-02-14 08:31:01", DAY_FIRST), None);
        assert_eq!(convert_timestamp("31/02/2018 00:00:00", DAY_FIRST), None);
        assert_eq!(convert_timestamp("", DAY_FIRST), None);
        assert_eq!(convert_timestamp("Timestamp", DAY_FIRST), None);
    }
}
