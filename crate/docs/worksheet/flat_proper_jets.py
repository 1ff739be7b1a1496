"""Flat proper closed system (phi = 1, tau = 0) in jet variables.

Checks compatibility, the differential consequences of Remn, the derivatives
of D = exp(-4t/3), beta = D s, and the signs of the C_122 / C_211 entries.
"""
import sympy as sp

R = sp.Rational
s, sb, tz, tw, xi, xib, Dv = sp.symbols('s sb tz tw xi xib D')

Dz = {s: R(4, 3) * tz * s, sb: xib / 2 - R(2, 3) * tz * sb,
      xi: R(16, 3) * s**2 * sb + R(4, 3) * tz * xi, xib: R(8, 3) * sb * xi,
      tz: R(4, 3) * tz**2 + 2 * s * tw - xi / 2, tw: R(4, 3) * s * sb,
      Dv: -R(4, 3) * tz * Dv}
Dw = {s: xi / 2 - R(2, 3) * tw * s, sb: R(4, 3) * tw * sb,
      xi: R(8, 3) * s * xib, xib: R(16, 3) * sb**2 * s + R(4, 3) * tw * xib,
      tz: R(4, 3) * s * sb, tw: R(4, 3) * tw**2 + 2 * sb * tz - xib / 2,
      Dv: -R(4, 3) * tw * Dv}


def D(e, rules):
    return sp.expand(sum(sp.diff(e, k) * v for k, v in rules.items()))


for f in [s, xi, tz]:
    print(f, 'compatibility:', sp.factor(D(D(f, Dz), Dw) - D(D(f, Dw), Dz)))

remn = R(80, 9) * s * sb * tz + R(16, 9) * s * tw**2 - 4 * s * xib + R(4, 3) * xi * tw
remnb = R(80, 9) * s * sb * tw + R(16, 9) * sb * tz**2 - 4 * sb * xi + R(4, 3) * xib * tz
print('D_z Remn =', sp.factor(D(remn, Dz)))
print('D_w Remn =', sp.factor(D(remn, Dw)))

# Reduce modulo Remn = conj(Remn) = 0 by solving for (xi, xibar).
xib_sol = sp.solve(remn, xib)[0]
for xs in sp.solve(remnb.subs(xib, xib_sol), xi):
    sub = {xib: xib_sol.subs(xi, xs), xi: xs}
    print('on Remn = 0: D_w Remn =', sp.factor(sp.simplify(D(remn, Dw).subs(sub))))
    d22 = D(D(D(D(Dv, Dz), Dz), Dw), Dw) / Dv
    print('on Remn = 0: D_zzww / D =', sp.factor(sp.simplify(d22.subs(sub))))

print('D_zzz / D =', sp.factor(D(D(D(Dv, Dz), Dz), Dz) / Dv))
print('beta_z =', sp.simplify(D(Dv * s, Dz)))
print('beta_w - (3/4) D_zz =', sp.simplify(D(Dv * s, Dw) - R(3, 4) * D(D(Dv, Dz), Dz)))

# C_ij = (4/3)(t_z, s; sbar, t_w) and C_122 = d_w C_12, C_211 = conj. Only the minus
# sign of the s t_w term satisfies the derivative formulas below.
C11, C12, C21, C22 = R(4, 3) * tz, R(4, 3) * s, R(4, 3) * sb, R(4, 3) * tw
print('d_w C_12 =', D(C12, Dw))
for sign in [-1, 1]:
    C122 = R(2, 3) * xi + sign * R(8, 9) * s * tw
    C211 = R(2, 3) * xib + sign * R(8, 9) * sb * tz
    print('sign %+d:' % sign,
          'C122_z', sp.simplify(D(C122, Dz) - (C122 * C11 + C12**2 * C21)),
          '| C211_w', sp.simplify(D(C211, Dw) - (C211 * C22 + C21**2 * C12)))
