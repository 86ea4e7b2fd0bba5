//! Oracles shared by the integration tests.

/// Direct enumeration of the two-security market, written out by hand:
/// arrival order, terminal signs and the other security's order.
pub fn two_security_oracle(phi: f64, rho: f64, synchronized: bool) -> (f64, f64, f64) {
    let (m, delta) = (50.0, 1.0);
    let joint = |u0: bool, u1: bool| if u0 == u1 { (1.0 + rho) / 4.0 } else { (1.0 - rho) / 4.0 };
    let buy = |up: bool| if up { phi } else { 1.0 - phi };
    let lik = |up: bool, b: bool| if b { buy(up) } else { 1.0 - buy(up) };
    // E[x0 | observed orders], where `other` is S2's order if observed
    let expect = |own: Option<bool>, other: Option<bool>| {
        let (mut num, mut den) = (0.0, 0.0);
        for u0 in [true, false] {
            for u1 in [true, false] {
                let w = joint(u0, u1)
                    * own.map_or(1.0, |b| lik(u0, b))
                    * other.map_or(1.0, |b| lik(u1, b));
                num += w * if u0 { m + delta } else { m - delta };
                den += w;
            }
        }
        num / den
    };
    let (mut w_all, mut cost, mut error) = (0.0, 0.0, 0.0);
    let (mut w_up, mut profit) = (0.0, 0.0);
    for second in [false, true] {
        for u0 in [true, false] {
            for u1 in [true, false] {
                for b1 in [true, false] {
                    let seen = (second && synchronized).then_some(b1);
                    let w = 0.5 * joint(u0, u1) * buy(u0) * lik(u1, b1);
                    let prevailing = expect(None, seen);
                    let price = expect(Some(true), seen);
                    let x = if u0 { m + delta } else { m - delta };
                    w_all += w;
                    cost += w * (price - prevailing);
                    error += w * (x - price).abs();
                    if u0 {
                        w_up += w;
                        profit += w * (x - price);
                    }
                }
            }
        }
    }
    (cost / w_all, error / w_all, profit / w_up)
}
